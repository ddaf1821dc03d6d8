import pytest

from clustcube import tourism
from clustcube.codq import compose_global, materialize_objects, parse_codq
from clustcube.star_store import load_star_data


@pytest.fixture(scope="session")
def tiny_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tourism_tiny")
    tourism.generate(tourism.GenConfig(seed=42, scale="tiny", out_dir=out))
    return out


@pytest.fixture(scope="session")
def tiny_data(tiny_dir):
    return load_star_data(tiny_dir)


@pytest.fixture(scope="session")
def ferry_objects(tiny_data):
    preset = tourism.preset_by_name("FerryInformationCube")
    spec = parse_codq(preset.codq_text)
    return preset, materialize_objects(compose_global([spec]), tiny_data.tables)
