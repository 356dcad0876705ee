import logging
import threading

from PySide6.QtCore import QRunnable, Slot


class Worker(QRunnable):
    """A container for a function to make it executable in a thread from a QThreadPool.

    After `run()` the function's return value is in `output`, or the exception it
    raised is in `error`. `finished` is set in either case.
    """

    def __init__(self, fn, *args, **kwargs):
        super(Worker, self).__init__()

        # The function and the args and kwargs to be passed need to saved as attributes
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.output = None
        self.error = None
        self.finished = threading.Event()
        # The pool must not delete the runnable, we still need to read the output
        self.setAutoDelete(False)

    @Slot()
    def run(self):
        try:
            self.output = self.fn(*self.args, **self.kwargs)
        except Exception as error:
            self.error = error
            name = getattr(self.fn, "__name__", None) or repr(self.fn)
            logging.exception(f"Exception raised by {name}")
        finally:
            self.finished.set()
