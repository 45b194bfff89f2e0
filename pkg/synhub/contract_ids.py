# synhub/contract_ids.py
CONFIG_SCHEMA_V1 = "synhub.config.v1"
SUMMARY_SCHEMA_V1 = "synhub.summary.v1"
MANIFEST_SCHEMA_V1 = "synhub.manifest.v1"
SCENARIOS_SCHEMA_V1 = "synhub.scenarios.v1"
SUITE_SCHEMA_V1 = "synhub.suite.v1"
