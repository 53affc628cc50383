from typing import NamedTuple

from vnhodge.validate.validate import Check, Column, integer, numeric, stringlike


class ValidationSchemas(NamedTuple):
    algebra_blocks = {
        "label": Column(stringlike),
        "n": Column(integer, checks=Check(">=", 1, report_by="label")),
        "mu": Column(numeric, checks=Check(">", 0, report_by="label")),
        "rho": Column(numeric, checks=Check(">", 0, report_by="label")),
    }
    module_multiplicities = {
        "mult": Column(integer, checks=Check(">=", 0)),
    }
    incidence_terms = {
        "from": Column(stringlike),
        "to": Column(stringlike),
        "coef": Column(integer),
    }
    morse_values = {
        "cell": Column(stringlike),
        "value": Column(numeric),
    }
