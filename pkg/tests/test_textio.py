import io

import numpy as np
import pytest

from spconv.textio import DenseFormatError, read_dense, write_dense


def test_round_trip_is_bit_exact(rng):
    a = rng.standard_normal((4, 3)) * 10.0 ** rng.integers(-300, 300, (4, 3))
    buf = io.StringIO()
    write_dense(a, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "4 3" and len(lines) == 5
    back = read_dense(io.StringIO(buf.getvalue()))
    assert back.tobytes() == a.tobytes()


def test_seventeen_significant_digits():
    buf = io.StringIO()
    write_dense(np.array([[0.1]]), buf)
    assert buf.getvalue().splitlines()[1] == "0.10000000000000001"


@pytest.mark.parametrize("text", ["", "2", "2 2\n1 2 3\n", "1 1\nabc\n"])
def test_malformed(text):
    with pytest.raises(DenseFormatError):
        read_dense(io.StringIO(text))
