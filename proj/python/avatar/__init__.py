"""Python bindings for the avatar codec, geometry and face mesh core."""

from ._avatar import (
    AvatarError,
    CalibrationState,
    PACKET_SIZE,
    LANDMARK_COUNT,
    apply_calibration,
    budget,
    calibrate,
    canonical_face,
    decode_frame,
    encode_frame,
    euler_to_matrix,
    euler_to_quaternion,
    f16_to_f32,
    f32_to_f16,
    generate_recording,
    h264_reference_rate,
    load_calibration,
    project,
    rotate_vector,
    save_calibration,
    truncation_ulp,
)

__all__ = [name for name in dir() if not name.startswith("_")]
