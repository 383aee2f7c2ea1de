"""
splitkit command families

One module per command: each builds its report with pure build_*_json
functions and adds its typer command through register(app).
"""
