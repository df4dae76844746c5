"""Scheduled message communication over degraded broadcast channels.

Random-coding exponents, minimal codeword lengths per schedule, the
stability region of state-independent scheduling policies, and a slotted
simulator to check it.
"""

__version__ = "0.1.0"
