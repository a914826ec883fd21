from czsim.parallel import run_blocks


def _square(x):
    return x * x


def _affine(a, b):
    return 3 * a + b


def test_serial_path_preserves_order():
    tasks = [(k,) for k in range(8)]
    assert run_blocks(_square, tasks, workers=1) == [k * k for k in range(8)]


def test_multi_argument_tasks():
    tasks = [(1, 2), (3, 4)]
    assert run_blocks(_affine, tasks, workers=1) == [5, 13]


def test_worker_count_does_not_change_results():
    tasks = [(k,) for k in range(12)]
    serial = run_blocks(_square, tasks, workers=1)
    parallel = run_blocks(_square, tasks, workers=3)
    assert serial == parallel


def test_empty_and_single_task():
    assert run_blocks(_square, [], workers=4) == []
    assert run_blocks(_square, [(5,)], workers=4) == [25]
