'''Dask scheduling behind ``--jobs``'''

from typing import Optional, Sequence, Tuple

import dask


def compute(tasks: Sequence, jobs: Optional[int] = None) -> Tuple:
    '''Evaluate delayed tasks in order

    ``jobs == 1`` runs in-process on the synchronous scheduler; anything else
    uses a process pool of ``jobs`` workers (all cores when None).
    '''
    if jobs == 1:
        return dask.compute(*tasks, scheduler='synchronous')
    return dask.compute(*tasks, scheduler='processes', num_workers=jobs)
