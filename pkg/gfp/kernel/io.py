# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import json
import os

import numpy as np

from gfp.exceptions import CheckpointMissingError, DatasetFormatError
from gfp.kernel.nn import MlpSpec, ParamSet

PARAMS_FORMAT_VERSION = 1
FLOAT64_LE = np.dtype("<f8")


def write_json(path, data):
    with open(path, "w") as fd:
        json.dump(data, fd, sort_keys=True, indent=2)
        fd.write("\n")


def read_json(path, field="manifest"):
    try:
        with open(path, "r") as fd:
            return json.load(fd)
    except ValueError as e:
        raise DatasetFormatError(field, "%s is not valid JSON: %s" % (path, e))


def save_params(params, directory, name, step=0):
    """ Writes <name>.json (spec, shapes, step) and <name>.bin (little-endian float64 blob) """
    arrays = list(params.named_arrays())
    manifest = {
        "format_version": PARAMS_FORMAT_VERSION,
        "spec": params.spec.to_dict(),
        "shapes": [[array_name, list(array.shape)] for array_name, array in arrays],
        "step": step,
        "file": "%s.bin" % name,
    }
    with open(os.path.join(directory, manifest["file"]), "wb") as fd:
        for _, array in arrays:
            fd.write(np.ascontiguousarray(array, dtype=FLOAT64_LE).tobytes())
    write_json(os.path.join(directory, "%s.json" % name), manifest)


def load_params(directory, name):
    """ Returns (params, step) for a network written by save_params """
    manifest_path = os.path.join(directory, "%s.json" % name)
    if not os.path.exists(manifest_path):
        raise CheckpointMissingError(manifest_path)
    manifest = read_json(manifest_path, field="%s.json" % name)
    if manifest.get("format_version") != PARAMS_FORMAT_VERSION:
        raise DatasetFormatError("%s.format_version" % name, "unsupported value %r" % manifest.get("format_version"))

    params = ParamSet.zeros(MlpSpec.from_dict(manifest["spec"]))
    expected = [[array_name, list(array.shape)] for array_name, array in params.named_arrays()]
    if manifest["shapes"] != expected:
        raise DatasetFormatError("%s.shapes" % name, "do not match the network spec")

    with open(os.path.join(directory, manifest["file"]), "rb") as fd:
        blob = fd.read()
    expected_bytes = sum(array.size for array in params.arrays()) * FLOAT64_LE.itemsize
    if len(blob) != expected_bytes:
        raise DatasetFormatError(manifest["file"], "expected %d bytes, got %d" % (expected_bytes, len(blob)))

    offset = 0
    for array in params.arrays():
        size = array.size * FLOAT64_LE.itemsize
        array[...] = np.frombuffer(blob, dtype=FLOAT64_LE, count=array.size, offset=offset).reshape(array.shape)
        offset += size
    return params, manifest["step"]
