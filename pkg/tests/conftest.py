import torch
from hypothesis import settings

# single-threaded torch keeps runs bit-reproducible and avoids oversubscribing
# the box while acceptance training runs elsewhere in the suite
torch.set_num_threads(1)

# wall-clock deadlines are meaningless on a loaded shared core
settings.register_profile("patient", deadline=None)
settings.load_profile("patient")
