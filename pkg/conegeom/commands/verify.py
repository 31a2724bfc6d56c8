from conegeom.commands.runner import ConfigPath, LogLevelOption, OutDir, Threads, execute


def verify(
    config: ConfigPath,
    out: OutDir = None,
    threads: Threads = 1,
    log_level: LogLevelOption = None,
):
    """
    Run the identity suites (Minkowski formulas, divergence theorem, pointwise identities,
    normal-offset expansion, rigidity) over the configured refinement levels.
    Exit code 0 iff every enabled check passes.
    """
    execute("verify", config, out, threads, log_level, lambda service: service.run_verify())
