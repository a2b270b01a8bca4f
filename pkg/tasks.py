from invoke import task  # pragma: no cover

SRC_DIR = 'thermaltap'  # pragma: no cover
TEST_DIR = 'tests'  # pragma: no cover


@task  # pragma: no cover
def mypy(c):  # pragma: no cover
    c.run(f'mypy {SRC_DIR} {TEST_DIR}')  # pragma: no cover


@task  # pragma: no cover
def test(c, slow=False):  # pragma: no cover
    c.run(f'pytest {TEST_DIR} --cov={SRC_DIR}' + (' --runslow' if slow else ''))  # pragma: no cover


@task  # pragma: no cover
def synth(c, out='data/default', seed=7):  # pragma: no cover
    c.run(f'thermaltap synth --suite suites/default.json --seed {seed} --out {out}')  # pragma: no cover
