"""Crash-rate benchmarking of automated-driving fleets against human drivers.

Modules: ``model`` (records and enums), ``ingest`` (mapping-config parsing),
``classify`` (crash types, outcomes, pre-crash movement), ``benchmark``
(adjusted human rates), ``stats`` (exact rate-ratio inference), ``report``
(tables) and ``cli``; ``simulate`` writes synthetic corpora with known truth.
"""

__version__ = "0.1.0"
