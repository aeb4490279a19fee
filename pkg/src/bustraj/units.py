"""Unit conversions used at validation boundaries."""

MPS_PER_MPH = 0.44704
MPS2_PER_MPHPS = 0.44704


def mph_to_mps(v):
    return v * MPS_PER_MPH


def mps_to_mph(v):
    return v / MPS_PER_MPH
