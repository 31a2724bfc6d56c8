import typer

from conegeom.commands import schema, spectrum, stability, sweep, verify
from conegeom.core.config import settings

app = typer.Typer(
    name="conegeom",
    help=f"{settings.PROJECT_NAME}: Minkowski identities, rigidity, Neumann spectra and stability of surfaces in cones.",
    no_args_is_help=True,
    add_completion=False,
)

# --- Commands ---
app.command("verify")(verify.verify)
app.command("spectrum")(spectrum.spectrum)
app.command("stability")(stability.stability)
app.command("sweep")(sweep.sweep)
app.command("schema")(schema.schema)


def main():
    app(prog_name="conegeom")


if __name__ == "__main__":
    main()
