#!/usr/bin/env python3

"""
Imagine you have to run several scenario files within a wall clock deadline.
Running them sequentially will be the easiest thing to do, but if one of them behaves badly
and takes too much time, the others have to wait for it...

This code, instead of running jobs sequentially, runs them all on separate threads in parallel.
Jobs that finish before the deadline are reported "on time", the ones still running when the
deadline is reached get a warning and are waited for anyway ("late").

Example:

             job1          job2            job3
start    ----------------------------------------------
              start        start           start

              finish
                           finish



deadline ----------------------------------------------
                                           (warning: job3 is late)
                                           finish

A job is any object with an execute() method, see ScenarioJob in cli.py
"""

from threading import Thread, Lock
import time


class FuncExecManager:
    """
    helper class to run the execute() method of several objects in parallel under a deadline
    """
    def __init__(self, list_of_objects, log_info=print, log_warn=print, log_debug=print):
        # deadline for jobs to finish, in seconds
        self.deadline = 600.0
        # save in member variable the received list of objects
        self.list_of_objects = list_of_objects
        # jobs that finished before / after the deadline
        self.on_time_functions = []
        self.late_functions = []
        # jobs that raised, (object, exception)
        self.failed_functions = []
        # flag to know when the deadline is reached
        self.is_deadline_reached = False
        self.lock = Lock()
        # configure loggers
        log_info('Started parallel function execution manager')
        self.log_warn = log_warn
        self.log_debug = log_debug

    def time_control(self, obj):
        name = getattr(obj, 'name', obj.__class__.__name__)
        # make backup of wall time
        start_time = time.time()
        try:
            obj.execute()
        except Exception as e:
            with self.lock:
                self.failed_functions.append((obj, e))
            self.log_warn(f'{name}: failed, {e}')
            return
        elapsed = time.time() - start_time
        with self.lock:
            if not self.is_deadline_reached:
                self.log_debug(f'finished {name} in time ({round(elapsed, 2)} sec)')
                self.on_time_functions.append(obj)
            else:
                self.log_warn(f'{name}: missed the deadline, took {round(elapsed - self.deadline, 2)} '
                              f'sec longer than expected')
                self.late_functions.append(obj)

    def deadline_thread(self, threads):
        """
        we create an additional thread to monitor the deadline
        """
        end = time.time() + self.deadline
        while time.time() < end:
            if not any(t.is_alive() for t in threads):
                return
            time.sleep(0.01)
        with self.lock:
            self.is_deadline_reached = True
        self.log_debug('==== deadline! ====')
        for t, obj in zip(threads, self.list_of_objects):
            if t.is_alive():
                self.log_warn(f'{getattr(obj, "name", obj.__class__.__name__)}: still running at the deadline')

    def start_parallel_execution(self, deadline=600.0):
        """run every job once, returns (on time, late, failed)"""
        # allow user to modify the deadline
        self.deadline = deadline
        self.on_time_functions, self.late_functions, self.failed_functions = [], [], []
        self.is_deadline_reached = False
        thread_list = [Thread(target=self.time_control, args=(obj,)) for obj in self.list_of_objects]
        for t in thread_list:
            t.start()
        # watch the deadline on a separate thread
        watchdog = Thread(target=self.deadline_thread, args=(thread_list,))
        watchdog.start()
        # wait for threads to finish
        for t in thread_list:
            t.join()
        watchdog.join()
        return self.on_time_functions, self.late_functions, self.failed_functions
