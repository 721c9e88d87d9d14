"""Imitation learning with robot-gated supervisor handoffs on small control tasks.

The package trains feedforward policies by behavior cloning and by
interactive variants (DAgger-style relabeling, classifier-gated and
hysteresis-gated handoffs), then accounts for how much supervisor
attention each variant consumed: context switches, supervisor actions,
and the latency-weighted burden that combines them.
"""

__version__ = "0.1.0"
