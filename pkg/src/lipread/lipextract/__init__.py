from .edges import CannyResult, canny, canny_adaptive
from .color import rgb_to_lab
from .dmd import DmdResult, dmd_separate
from .features import FEATURE_MODES, MASK_GRID, RAW_ROI, frame_feature, lip_mask, mask_to_feature, roi_feature
from .frames import crop, read_frame, to_gray, write_frame
from .kmeans import Clustering, kmeans_ab, lip_cluster_index, select_lip_cluster

__all__ = [
    "CannyResult", "Clustering", "DmdResult", "FEATURE_MODES", "MASK_GRID", "RAW_ROI",
    "canny", "canny_adaptive", "crop", "dmd_separate", "frame_feature", "kmeans_ab",
    "lip_cluster_index", "lip_mask", "mask_to_feature", "read_frame", "rgb_to_lab",
    "roi_feature", "select_lip_cluster", "to_gray", "write_frame",
]
