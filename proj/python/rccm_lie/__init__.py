"""Python access to the rccm C++ core."""

from ._rccm import (
    Certificate,
    disturbance_bound,
    disturbance_true,
    e_factor,
    e_perp,
    error_function,
    euler_zyx,
    hat,
    plan,
    projection,
    rotation_exp,
    simulate,
    tangent_basis,
    train,
    transversality_residual,
    vector_field,
    vee,
    verify,
)

__all__ = [
    "Certificate",
    "disturbance_bound",
    "disturbance_true",
    "e_factor",
    "e_perp",
    "error_function",
    "euler_zyx",
    "hat",
    "plan",
    "projection",
    "rotation_exp",
    "simulate",
    "tangent_basis",
    "train",
    "transversality_residual",
    "vector_field",
    "vee",
    "verify",
]
