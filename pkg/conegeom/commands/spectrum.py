from conegeom.commands.runner import ConfigPath, LogLevelOption, OutDir, Threads, execute


def spectrum(
    config: ConfigPath,
    out: OutDir = None,
    threads: Threads = 1,
    log_level: LogLevelOption = None,
):
    """First Neumann eigenvalue of the surface on the configured mesh levels, with a Richardson value."""
    execute("spectrum", config, out, threads, log_level, lambda service: service.run_spectrum())
