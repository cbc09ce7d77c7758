"""Configuration, scenario pipelines, CSV persistence and the command line."""
