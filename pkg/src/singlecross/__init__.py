"""Single-crossing preferences, step mechanisms and optimal finite-range selling."""

from .errors import SingleCrossingError
from .mechanism import (
    StepMechanism,
    TabulatedView,
    build_from_geometry,
    constant_mechanism,
    expected_revenue,
    mechanism_from_record,
)
from .multibuyer import (
    AuctionOutcome,
    BuyerProfile,
    LowerEfficientRule,
    MenuRule,
    MyersonRule,
    ZeroRule,
    check_sp_multibuyer,
    deterministic_rule,
    lower_efficient_extend,
    myerson_two_buyer,
    optimal_rule,
    simulate,
)
from .optimizer import (
    SolveOptions,
    SolveSolution,
    brute_force_oracle,
    chain_payments,
    deterministic_optimal,
    foc_residuals,
    objective,
    solve_optimal,
    sweep,
    union_slice_analysis,
)
from .prefdomain import (
    Bundle,
    Comparison,
    FamilyKind,
    Order,
    Preference,
    PreferenceFamily,
    compare_prefs,
    indiff_label,
    indiff_through,
    prefers,
    reserve_payment,
)
from .typedist import (
    AffineCDF,
    PiecewiseLinearCDF,
    SliceMixture,
    TruncatedExponential,
    Uniform,
)
from .verifier import (
    VerificationReport,
    check_indirect_continuity,
    check_ir,
    check_local_sp,
    check_monotone,
    check_sp_grid,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
