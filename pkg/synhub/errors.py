class SynhubError(RuntimeError):
    """Base class for every error raised by synhub."""


class WrongLength(SynhubError):
    """A datagram is not exactly 8 octets."""


class NoReference(SynhubError):
    """The secondary has not yet received any primary-originated stimulus."""


class UnknownNeuron(SynhubError):
    """A neuron id is not known to the receiving node."""


class MalformedEventKind(SynhubError):
    """The R2 segment does not decode for the sender role."""


class DuplicateSynapseId(SynhubError):
    pass


class SelfLoop(SynhubError):
    pass


class OutOfRange(SynhubError):
    pass


class ConfigError(SynhubError):
    """Invalid or inconsistent run configuration."""


class NodeStartupFailure(SynhubError):
    pass


class OutputIoError(SynhubError):
    pass
