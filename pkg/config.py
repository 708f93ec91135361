import os

class Config:
    GASPHS_RTOL = float(os.environ.get('GASPHS_RTOL') or 1e-8)
    GASPHS_ATOL = float(os.environ.get('GASPHS_ATOL') or 1e-8)
    GASPHS_METHOD = os.environ.get('GASPHS_METHOD') or 'rk45'
    GASPHS_SAMPLE_DT = float(os.environ.get('GASPHS_SAMPLE_DT') or 60.0)
    GASPHS_OUTPUT_DIR = os.environ.get('GASPHS_OUTPUT_DIR') or 'runs'
    GASPHS_LOG_LEVEL = os.environ.get('GASPHS_LOG_LEVEL') or 'INFO'
    GASPHS_BENCHMARK_WORKERS = int(os.environ.get('GASPHS_BENCHMARK_WORKERS') or 4)
    GASPHS_STEADY_TOL = float(os.environ.get('GASPHS_STEADY_TOL') or 1e-10)
    GASPHS_STEADY_MAX_ITER = int(os.environ.get('GASPHS_STEADY_MAX_ITER') or 60)
    GASPHS_VELOCITY_LIMIT = float(os.environ.get('GASPHS_VELOCITY_LIMIT') or 15.0)

class TestConfig(Config):
    TESTING = True
    GASPHS_BENCHMARK_WORKERS = 1
    GASPHS_SAMPLE_DT = 600.0
    GASPHS_LOG_LEVEL = 'DEBUG'
