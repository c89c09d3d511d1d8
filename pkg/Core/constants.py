# ============================================================================
# constants.py - Centralized constants for LosaTAL
#
# This module defines project-wide defaults, on-disk format versions and the
# CLI exit-code table. Config dataclasses in Core/config.py read their
# defaults from here so a single edit changes a default everywhere.
# ============================================================================

# On-disk formats
DATASET_FORMAT = "losa-ds-v1"
CHECKPOINT_FORMAT = "losa-ckpt-v1"
MANIFEST_NAME = "manifest.json"

# Default desk configuration
DEFAULT_SEED = 0
CLIP_LEN = 16
CLIP_STRIDE = 16
FRAME_SIZE = 16
FRAME_CHANNELS = 3
NUM_LAYERS = 4
FEATURE_SIZE = 4
FEATURE_CHANNELS = 32
BLOCK_EXPANSION = 5
TEMPORAL_POOL = 2

N_HEADS = 4
INNER_ADAPTER_RATIO = 4
GATE_STRATEGIES = ("zero", "random", "ones")
RANDOM_GATE_RANGE = 0.1

NUM_CLASSES = 4
MAX_VIDEO_LENGTH = 576
HEAD_TOWER = 2
HEAD_KERNEL = 3
SCORE_THRESHOLD = 0.05
NMS_IOU = 0.5
MAX_DETECTIONS = 100
CLASS_PRIOR = 0.01

BASE_LR = 1e-4
WEIGHT_DECAY = 0.05
BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
WARMUP_EPOCHS = 5
TOTAL_EPOCHS = 30

THUMOS_TIOU = (0.3, 0.4, 0.5, 0.6, 0.7)
ANET_TIOU = (0.5, 0.75, 0.95)

TRAIN_VIDEOS = 200
TEST_VIDEOS = 50

# Gradient checks
FD_EPS = 1e-5
FD_TOL = 1e-5

# Memory report batch: the longest default video, so every clip count is exercised
MEMREPORT_LENGTH = 256

# Training modes
TRAIN_MODES = ("losa", "head_only", "full_backbone", "in_backbone")
MEMREPORT_MODES = ("head_only", "losa", "in_backbone", "full_backbone")

# CLI exit codes
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_AUDIT = 4
EXIT_MISMATCH = 5

# Output file names
CHECKPOINT_NAME = "model.ckpt"
CONFIG_NAME = "config.json"
AUDIT_NAME = "audit.json"
METRICS_NAME = "metrics.csv"
GATE_REPORT_NAME = "gate_report.csv"
EVAL_METRICS_NAME = "eval_metrics.csv"
DETECTIONS_NAME = "detections.json"
PROBE_REPORT_NAME = "probe_report.csv"
LOG_DIR = "logs"
LOG_NAME = "losa.log"
MEMREPORT_NAME = "memreport.csv"
GRADCHECK_NAME = "gradcheck.csv"
ABLATION_NAME = "ablation_{axis}.csv"
ABLATION_SUMMARY_NAME = "ablation_{axis}_summary.csv"
