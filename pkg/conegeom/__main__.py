from conegeom.main import app

app(prog_name="conegeom")
