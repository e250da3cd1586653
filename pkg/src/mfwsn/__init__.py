"""Mean-field analysis of wireless sensor network protocols with spatial capture."""

__version__ = "0.1.0"

from mfwsn.capture import (ChannelModel, LogNormal, QTable, Uniform, capture_probability,
                           tabulate_q)
from mfwsn.model import ModelBundle, load_model, parse_model
from mfwsn.pctmc import Pctmc, build_pctmc
from mfwsn.odes import find_fixpoint, integrate
from mfwsn.ssa import simulate

__all__ = ["ChannelModel", "LogNormal", "QTable", "Uniform", "capture_probability",
           "tabulate_q", "ModelBundle", "load_model", "parse_model", "Pctmc", "build_pctmc",
           "find_fixpoint", "integrate", "simulate", "__version__"]
