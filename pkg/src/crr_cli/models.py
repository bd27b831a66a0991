from enum import StrEnum


class VarianceChoice(StrEnum):
    CLUSTER = "cluster"
    INDIVIDUAL = "individual"


class TestChoice(StrEnum):
    __test__ = False

    ADDITIVITY = "additivity"
    FUNCTIONAL_FORM = "functional-form"
    ALL = "all"


class Arm(StrEnum):
    CRC = "CRC"  # IPCW, cluster-robust
    CCC = "CCC"  # censoring-complete, cluster-robust
    UCRC = "UCRC"  # IPCW, subjects treated as independent
    UCCC = "UCCC"  # censoring-complete, subjects treated as independent
