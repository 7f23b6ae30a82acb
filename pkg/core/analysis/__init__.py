from .policy_map import MapAxes, PolicyMap, build_policy_map

__all__ = ["MapAxes", "PolicyMap", "build_policy_map"]
