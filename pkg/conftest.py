# import the real packages before pytest derives dotted module names for the
# test files: the fusion tests live under a directory that shares the
# installed package's name, and a placeholder parent module would shadow it
import confmix  # noqa: F401
import fusion  # noqa: F401
