"""qsoskit: Moment-QSOS semidefinite relaxations for quaternion polynomial optimization.

The package builds sum-of-squares relaxations of quaternion polynomial
problems directly in the quaternion domain, reformulates the resulting
quaternion SDP as a real SDP via the 4x4 real embedding, solves it, and
extracts/certifies minimizers from the moment side of the dual.
"""

__version__ = "0.1.0"
