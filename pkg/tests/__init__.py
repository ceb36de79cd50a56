"""
Test package for the data automation bot.
"""
