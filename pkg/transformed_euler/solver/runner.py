import logging

from PySide6.QtCore import QCoreApplication, QThreadPool

from .worker import Worker


# Thread pools want an instance of QCoreApplication or one of its subclasses
# So if there isn't an existing app singleton, create one and keep it alive
# Otherwise just provides access to the currently running Qt app
class AppManager:
    _instance = None

    @classmethod
    def get_instance(cls):
        if QCoreApplication.instance() is None:
            cls._instance = QCoreApplication([])
        return QCoreApplication.instance()


def app():
    return AppManager.get_instance()


class Runner:
    """Runs independent jobs on a thread pool and hands back their outputs in order.

    The number of worker threads never affects the results, only how long they take.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be at least 1, not {workers}")
        self.workers = workers
        app()
        self.threadpool = QThreadPool()
        self.threadpool.setMaxThreadCount(workers)

    def map(self, fn, jobs, progress_callback=None):
        """Call `fn(*job)` for every job and return the outputs in the order of `jobs`.

        If any job raised, the first such exception (in job order) is re-raised once
        all jobs have finished. `progress_callback`, if given, is called with the
        number of completed jobs, always from the calling thread.
        """
        workers = [Worker(fn, *job) for job in jobs]
        logging.info(f"Running {len(workers)} jobs on {self.workers} thread(s)")
        for worker in workers:
            self.threadpool.start(worker)
        # Wait on the Python side, so that the GIL is released while waiting
        for done, worker in enumerate(workers, start=1):
            worker.finished.wait()
            if progress_callback is not None:
                progress_callback(done)
        self.threadpool.waitForDone()
        for worker in workers:
            if worker.error is not None:
                raise worker.error
        return [worker.output for worker in workers]
