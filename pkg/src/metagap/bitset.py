"""Python ints as bitsets over designs, element i at bit i."""

import numpy as np
import numpy.typing as npt


def bitset(mask: npt.NDArray[np.bool_]) -> int:
    """
    Pack a boolean vector into an int.

    ```python
    import numpy as np
    from metagap.bitset import bitset
    assert bitset(np.array([True, False, True])) == 0b101
    assert bitset(np.zeros(70, dtype=bool)) == 0
    ```
    """
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")
