"""Subcommands, each module registers itself through setup(app)"""
