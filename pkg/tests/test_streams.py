import numpy as np

from kcycles.streams import as_generator, map_replicas, replica_stream, spawn


def _square(x):
    return x * x


def test_spawn_is_reproducible_and_independent():
    a = [g.random() for g in spawn(11, 4)]
    b = [g.random() for g in spawn(11, 4)]
    assert a == b and len(set(a)) == 4


def test_replica_stream_matches_spawn():
    for i in (0, 3, 7):
        assert replica_stream(5, i).random() == spawn(5, 8)[i].random()


def test_as_generator_passthrough():
    g = np.random.default_rng(1)
    assert as_generator(g) is g
    assert as_generator(3).random() == np.random.default_rng(3).random()


def test_map_replicas_keeps_order():
    args = list(range(12))
    assert map_replicas(_square, args, threads=3) == [x * x for x in args]
    assert map_replicas(_square, args) == [x * x for x in args]
