from vnhodge import data
from vnhodge.hcomplex import betti, make_complex, spectral_density, spectrum
from vnhodge.hmodule import HilbertModule, dim_tau, free_module
from vnhodge.read import read_problem, read_subdivision
from vnhodge.truncation import homotopy_certificate, truncate
from vnhodge.vna_core import FactorBlock, make_algebra

__version__ = "0.1.0"
