"""finqlab: a variational quantum circuit laboratory for option pricing.

Trains compact 2- and 4-qubit pricing circuits against the analytic
Black-Scholes-Merton surface, and reproduces shot-noise, readout-mitigation,
and 3-CNOT circuit-compression experiments in simulation.
"""
from .bsm import (
    Dataset,
    MarketPoint,
    PriceLabel,
    bsm_kernels,
    bsm_price,
    generate_dataset,
    load_dataset,
    norm_cdf,
    save_dataset,
)
from .compression import (
    CanonicalAnsatz,
    CompressionResult,
    bound_unitary,
    compress_benchmark_suite,
    fit_canonical,
    phase_invariant_distance,
)
from .experiments import (
    AssignmentMatrix,
    ExperimentStats,
    MetricsReport,
    RIGETTI_ANKAA3,
    RegimeBreakdown,
    ShotGridConfig,
    benchmark_points,
    compute_metrics,
    convergence_analysis,
    mitigate_readout,
    mitigation_study,
    ols_fit,
    ols_predict,
    regime_breakdown,
    run_shot_grid,
    stability_track,
)
from .model import (
    FinqbitParams,
    FourQubitParams,
    build_4q_baseline,
    build_4q_fourier,
    build_finqbit_circuit,
    predict_price,
)
from .simulator import (
    CircuitDescription,
    GateSpec,
    ShotOutcome,
    StateVector,
    apply_gate,
    apply_readout_noise,
    circuit_unitary,
    estimate_expectation_from_counts,
    expectation_z,
    run_circuit,
    sample_shots,
    to_qasm,
    zero_state,
)
from .training import (
    FourierSlice,
    TrainConfig,
    TrainReport,
    fourier_slice,
    mse_loss,
    parameter_shift_gradient,
    train,
)

__version__ = "0.1.0"
