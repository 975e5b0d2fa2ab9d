from .config import (
    BarrierConfig,
    BaseConfig,
    ClockConfig,
    CoverConfig,
    GWConfig,
    KernelConfig,
    PlaneConfig,
    WassersteinConfig,
    load_config,
    worker_count,
)
from .report import Report, Row, SummaryStats, emit_report, validate_summary
from .runners import (
    RUNNERS,
    run_barrier_compare,
    run_clock_check,
    run_cover_time,
    run_gw_equivalence,
    run_kernel_suite,
    run_plane_aR,
    run_wasserstein,
)
