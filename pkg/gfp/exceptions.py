# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)


class GfpError(Exception):
    """ Base class for every error raised by gfp, the cli exits with `exit_code` """

    exit_code = 2


class ShapeError(GfpError):
    def __init__(self, what, expected, actual):
        self.what = what
        exc = "Shape mismatch for %s: expected %s, got %s" % (what, expected, actual)
        super().__init__(exc)


class StaleCacheError(GfpError):
    def __init__(self, cached_version, current_version):
        exc = (
            "Forward cache was computed with parameter version %s but the parameters are now at version %s; "
            "run mlp_forward again before mlp_backward." % (cached_version, current_version)
        )
        super().__init__(exc)


class NonFiniteError(GfpError):
    exit_code = 1

    def __init__(self, where, step=None, detail=None):
        self.where = where
        self.step = step
        exc = "Non-finite value in %s" % where
        if step is not None:
            exc += " at step %s" % step
        if detail:
            exc += " (%s)" % detail
        super().__init__(exc)


class UnknownEnvironment(GfpError):
    def __init__(self, env_id, known):
        self.env_id = env_id
        exc = "Unknown environment '%s', expected one of: %s" % (env_id, ", ".join(sorted(known)))
        super().__init__(exc)


class InvalidMixError(GfpError):
    def __init__(self, reason):
        exc = "Invalid behavior mix: %s" % reason
        super().__init__(exc)


class DatasetFormatError(GfpError):
    def __init__(self, field, reason):
        self.field = field
        exc = "Invalid dataset field '%s': %s" % (field, reason)
        super().__init__(exc)


class DegenerateOracleError(GfpError):
    def __init__(self, j_opt, j_rand):
        exc = "Cannot normalize scores: J_opt (%r) must be greater than J_rand (%r)" % (j_opt, j_rand)
        super().__init__(exc)


class ConfigError(GfpError):
    def __init__(self, field, reason):
        self.field = field
        exc = "Invalid configuration field '%s': %s" % (field, reason)
        super().__init__(exc)


class CheckpointMismatchError(GfpError):
    def __init__(self, fields):
        self.fields = list(fields)
        exc = "Checkpoint was written with a different configuration, differing fields: %s" % ", ".join(
            self.fields or ["<unknown>"]
        )
        super().__init__(exc)


class CheckpointMissingError(GfpError):
    def __init__(self, path):
        self.path = path
        exc = "No checkpoint found at %s" % path
        super().__init__(exc)
