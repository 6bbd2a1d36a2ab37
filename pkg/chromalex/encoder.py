"""
An encoder to help dumping numpy values, enums, paths and datetimes to json
"""
import datetime
import enum
import json
import pathlib

import numpy as np


class NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, datetime.datetime):
            return obj.isoformat()
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, enum.Enum):
            return obj.value
        elif isinstance(obj, pathlib.PurePath):
            return obj.as_posix()
        else:
            return super(NumpyEncoder, self).default(obj)


def dumps(obj, **kwargs):
    """`json.dumps` with `NumpyEncoder`, sorted keys and stable separators."""
    kwargs.setdefault('indent', 2)
    return json.dumps(obj, cls=NumpyEncoder, sort_keys=True, ensure_ascii=False, **kwargs)
