class KipartError(Exception):
    """Base class for errors raised by kipart."""


class ConfigError(KipartError, ValueError):
    """Invalid configuration value or unknown configuration path."""


class ConfigMismatch(ConfigError):
    """A partitioner and a config disagree on partitions, hosts or seed."""


class EmptyInput(KipartError, ValueError):
    """Nothing to merge."""


class StreamFormatError(KipartError, ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
