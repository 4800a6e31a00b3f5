"""Exception hierarchy shared by all engines."""


class WrpLabError(Exception):
    """Base class for every error raised by wrplab."""


class BadWeights(WrpLabError, ValueError):
    pass


class BadPartition(WrpLabError, ValueError):
    pass


class NonRefiningFiltration(WrpLabError, ValueError):
    pass


class EmptyAtom(WrpLabError):
    pass


class NotAdapted(WrpLabError, ValueError):
    pass


class NotIncreasing(WrpLabError, ValueError):
    pass


class NotAMartingale(WrpLabError, ValueError):
    pass


class MissingMark(WrpLabError, KeyError):
    pass


class Unsupported(WrpLabError, NotImplementedError):
    pass


class RepresentationMismatch(WrpLabError, ValueError):
    pass


class FactorLacksWrp(WrpLabError, ValueError):
    pass


class EquivalenceFails(WrpLabError, ValueError):
    pass


class MarginalMismatch(WrpLabError, ValueError):
    pass


class NontrivialF0(WrpLabError, ValueError):
    pass


class BaseLacksWrp(WrpLabError, ValueError):
    pass


class BadGrid(WrpLabError, ValueError):
    pass


class ConfigError(WrpLabError, ValueError):
    pass
