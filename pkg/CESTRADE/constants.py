"""Constants for the community energy storage trading simulator."""

# Time grid defaults (half-hourly day-ahead schedule)
DEFAULT_SLOTS = 48
DEFAULT_SLOT_HOURS = 0.5
DEFAULT_PEAK_WINDOW = (32, 46)  # 16:00-23:00, half-open

# Community defaults
DEFAULT_USER_COUNT = 40
DEFAULT_PARTICIPATION = 0.4
DEFAULT_SEED = 7
DEFAULT_PARTICIPATION_LIST = (0.3, 0.4, 0.5)

# Synthetic demand profile (kWh/day and slot positions)
DEFAULT_DAILY_DEMAND = 14.0
DEFAULT_DEMAND_SPREAD = 0.15  # relative spread of household daily totals
DEFAULT_MORNING_PEAK = 15
DEFAULT_EVENING_PEAK = 38
DEFAULT_MORNING_WIDTH = 3.0
DEFAULT_EVENING_WIDTH = 4.0
DEFAULT_BASE_SHARE = 0.35
DEFAULT_MORNING_SHARE = 0.25
DEFAULT_DEMAND_NOISE = 0.1

# Synthetic PV profile
DEFAULT_PV_PEAK_KW = 0.35  # keeps the midday baseline positive up to 50% participation
DEFAULT_SUNRISE = 12
DEFAULT_SUNSET = 38
DEFAULT_CLOUD_NOISE = 0.1

# Tariff calibration (cents/kWh)
DEFAULT_REFERENCE_MIN = 20.0
DEFAULT_REFERENCE_MAX = 52.0
DEFAULT_REFERENCE_AVG = 30.0
PEAK_PHI_RATIO = 1.5
DEFAULT_MAX_LOAD_FACTOR = 2.0  # L_max relative to the baseline peak

# Community energy storage
DEFAULT_CAPACITY = 80.0
DEFAULT_INITIAL_FRACTION = 0.25
DEFAULT_ALPHA = 0.9 ** (1.0 / 48.0)
DEFAULT_BETA_PLUS = 0.9
DEFAULT_BETA_MINUS = 1.1
DEFAULT_CAPACITY_LIST = (0.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 150.0)

# Solver and algorithm tolerances
QP_TOL = 1e-8
QP_MAX_ITER = 200
PSD_TOL = 1e-8
IBR_TOL = 1e-8
IBR_ITER_FACTOR = 10  # max_iter = factor * I
DEFAULT_TAU = 0.002
DEFAULT_MAX_ROUNDS = 100
CONTINUITY_TOL = 1e-6  # kWh
CAPACITY_TOL_FACTOR = 1e-9  # times Q_M
CAPACITY_MARGIN = 1e-7  # times Q_M, kept inside the capacity rows of the QPs
LOSSLESS_TOL = 1e-12  # beta_minus - beta_plus below which the store is lossless
COMPLEMENTARITY_TOL = 1e-6  # kWh
PARETO_THETAS = (-0.1, -0.05, -0.01, 0.01, 0.05, 0.1)

# Output formatting
CSV_SIGNIFICANT_DIGITS = 9
DEFAULT_VARIANCE_LIST = (0.0, 5.0, 10.0, 25.0)
DEFAULT_OUTPUT_DIR = "results"
