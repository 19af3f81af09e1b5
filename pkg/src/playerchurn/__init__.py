"""playerchurn: churn analytics over MMORPG snapshot traces"""

__version__ = "0.1.0"
