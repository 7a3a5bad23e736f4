"""Command line frontend: parse, analyze, simulate, decompose, bench."""
