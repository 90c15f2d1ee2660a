"""Exception hierarchy shared by every module."""


class MarketError(ValueError):
    """Base class for invalid market inputs."""


class InvalidFitProb(MarketError):
    pass


class WeightSum(MarketError):
    pass


class DegreeOutOfRange(MarketError):
    pass


class NegativeCost(MarketError):
    pass


class InconsistentScreens(MarketError):
    """Stored (fit_prob, quality) disagree with the screen products."""


class InvalidDistribution(MarketError):
    pass


class ZeroFitPosterior(MarketError):
    pass


class TooManyBusinesses(MarketError):
    pass


class UnknownBusiness(MarketError, KeyError):
    pass


class IncompatibleSpecs(MarketError):
    pass


class DegenerateQuality(MarketError):
    pass


class QuantileOutOfRange(MarketError):
    pass


class AsymmetricInput(MarketError):
    pass


class AsymmetricLearnedSet(AsymmetricInput):
    pass


class UnknownReproduction(MarketError, KeyError):
    pass
