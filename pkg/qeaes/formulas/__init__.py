"""Raw formulas for randomness statistics and cipher primitives"""
