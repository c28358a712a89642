"""Extract convergence-law constants of Trotter and QSP circuits from simulated sweeps."""

from .fitkit import FitError, FitResult, SweepRow, SweepSeries, cost, fit_linear_basis, fit_nonlinear
from .pauli import (HamiltonianParseError, PauliString, PauliSum, PauliTerm, compute_xi,
                    load_hamiltonian, parse_hamiltonian, pauli_product)
from .qsp import (PhaseAngleSet, QspErrorModel, bundled_sign_angles, build_qsp_circuit,
                  fit_qsp, one_qubit_qsp_eval, parse_phase_angles, qsp_err_model, qsp_fit_eq,
                  sweep_qsp)
from .simulator import (Circuit, Estimate, StateVector, hadamard_test_estimate,
                        init_basis_state, run_circuit)
from .trotter import (ObservableKind, TrotterErrorModel, build_lie_trotter, fit_error_model,
                      fit_trotter, min_trotter_number, predict_err, rescale_constants,
                      sweep_trotter)

__version__ = "0.1.0"
