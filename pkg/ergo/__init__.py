"""
ergo - 有限状态马尔可夫链分析工具包

遍历性、耦合、极限定理、大偏差与离散泊松方程
"""

__version__ = "1.0.0"
