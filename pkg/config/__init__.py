"""
Configuration package for the transfer-learning workbench
"""
from .config import *
