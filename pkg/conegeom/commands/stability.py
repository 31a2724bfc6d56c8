from conegeom.commands.runner import ConfigPath, LogLevelOption, OutDir, Threads, execute


def stability(
    config: ConfigPath,
    out: OutDir = None,
    threads: Threads = 1,
    log_level: LogLevelOption = None,
):
    """Stability report: lambda1 refinement, both sides of the eigenvalue inequality and its supporting identities."""
    execute("stability", config, out, threads, log_level, lambda service: service.run_stability())
