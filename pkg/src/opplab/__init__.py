"""opplab: value statistics of indefinite ternary quadratic forms at integer
points, with the flow averages and energies that control them."""

__version__ = "0.1.0"

from .errors import (BudgetExceeded, CoplanarInput, DegenerateForm,
                     DomainError, IntegralizationError, NotInH, NotIndefinite,
                     NotMember, NotNormalized, OppLabError, OracleTooLarge,
                     SingularBasis)
from .qform import (B0, GroupElement, QForm, dual, evaluate, evaluate_pair,
                    factor_gq, from_coefficients, gradient, load_form,
                    normalize_det, q0_form, signature, wedge_dual)
from .lattice import (CountResult, LatticeVectorReport, alpha,
                      collect_shell_points, count_bruteforce, count_in_shell,
                      min_value_solve, shortest_vector, upper_bound_check)
from .mainterm import CqEstimate, cq_montecarlo, cq_quadrature
from .exceptional import (ExceptionalLine, ExceptionalPlane, ExceptionalSet,
                          RationalApproximant, detect_exceptional,
                          diophantine_quality, find_exceptional_lines,
                          find_exceptional_planes, rational_from_five,
                          special_count)
from .dynamics import (CircleAverageResult, TestFunction, a, alpha_moment,
                       circle_average, emm_calculus_check, j_integral, k,
                       k_batch, kintegral_decay, siegel_transform, u, uminus)
from . import energy
from .energy import (DecayStatistics, PointCloud, RVector, ad_action,
                     ad_matrix, expansion_check,
                     projection_decay_experiment, r_basis,
                     sample_regular_cloud, varpi)
from .cli import experiment_quantitative, run
