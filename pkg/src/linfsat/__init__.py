"""Star-norm optimal linear and saturating controller synthesis for LTI plants."""
from .baselines import BaselineSpec, lqr_gain, pole_place_gain
from .errors import (BadAlpha, BadInput, BadTimestep, DimensionMismatch, Infeasible, InvalidParams,
                     LinfsatError, NotControllable, NotStabilizable, SingularBlock)
from .linalg import SymMatrix, cholesky, eig_sym, is_psd, schur_complement
from .model import BuConvention, FrequencyParams, PlantModel, build_frequency_model
from .sdp import SdpProblem, SdpSolution, SolverOptions, Status, check_feasible, solve
from .sim import (DisturbanceProfile, SimResult, export_csv, gen_disturbance, probe_reachable, simulate,
                  simulate_batch)
from .synthesis import (ControllerDesign, Mode, ObserverDesign, SearchSpec, StarNormCertificate, control_law,
                        star_norm, synth_fs, synth_of)

__version__ = "0.1.0"
