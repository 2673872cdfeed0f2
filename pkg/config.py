# 系统配置
class Config:
    # 日志配置
    ENABLE_ITERATION_LOGGING = True  # 是否记录每次迭代
    LOG_LEVEL = "INFO"
    LOG_TO_FILE = True               # 是否保存到文件（位于输出目录下）
    LOG_FILE_NAME = "simpl_{time:YYYY-MM-DD}.log"
    LOG_ROTATION = "1 day"           # 日志轮转：1 day / 1 week / 100 MB
    LOG_RETENTION = "30 days"        # 保留时间：30 days / 1 week / 10（保留文件数）
    LOG_MAX_VECTOR_SIZE = 16         # 日志中向量的最大记录长度

    # 优化器默认参数
    C1 = 1e-4                        # Armijo 常数
    ALPHA0 = 1.0                     # 第一步步长
    ALPHA_MIN = 1e-12
    ALPHA_MAX = 1e12
    MAX_ITERS = 200
    MAX_BACKTRACKS = 10
    TOL_ABS = 0.0
    TOL_REL = 1e-4
    GBB_DENOMINATOR_FLOOR = 1e-300

    # 投影默认参数
    TOL_G = 1e-10                    # 约束容差（∫Wη 的单位）
    MAX_SWEEPS = 500                 # Dykstra 最大轮数
    ILLINOIS_MAX_ITER = 200
    BRACKET_LIMIT = 2.0 ** 60        # 区间扩张上限

    # 多面体参数
    INVERSE_MAP_TOL = 1e-12
    INVERSE_MAP_MAX_ITER = 100
    INVERSE_MAP_NEWTON_REGION = 1e-6  # 残差低于此值时只按残差范数做线搜索
    BREGMAN_NEGATIVE_TOL = 1e-12      # 相对尺度，超过即报错
    HESSIAN_REGULARIZATION = 1e-12
    DISTINCT_VERTEX_TOL = 1e-12
    RANK_TOL = 1e-10

    # 线性求解
    DIRECT_SOLVER_MAX_DOFS = 400_000  # 超过此自由度数改用 PCG
    CG_RTOL = 1e-12
    CG_MAX_ITER = 20_000
    SOLVE_BACKWARD_ERROR_TOL = 1e-10  # ‖Ku−f‖ ≤ tol·(‖K‖‖u‖+‖f‖)
    REFINEMENT_STEPS = 3              # 迭代精化步数上限
    PIVOT_RATIO_TOL = 1e-14

    # 插件目录（问题定义与验证 oracle）
    PLUGIN_PACKAGES = ("problems", "oracles")

    # 线程数环境变量（唯一读取的环境变量）
    THREADS_ENV_VAR = "SIMPL_NUM_THREADS"
