import time


def time_formatter(func):

    def in_hms(seconds: float) -> str:
        hours, rem = divmod(seconds, 3600)
        minutes, seconds = divmod(rem, 60)
        return f"{int(hours):0>2}:{int(minutes):0>2}:{float(seconds):05.2f}"

    def wrapper(*args, **kwargs):
        __time = func(*args, **kwargs)
        match kwargs.get("_format"):
            case "hms":
                return in_hms(__time)
            case "ms":
                return __time * 1000.0
            case _:
                return __time

    return wrapper


class Timer:
    """perf_counter stopwatch, usable as a context manager around a pipeline stage"""

    def __init__(self) -> None:
        self.__start_time = None
        self.__stop_time = None

    def __check_started(self) -> None:
        if self.__start_time is None:
            raise TimerError("Timer is not running yet. Use .start() to start it")

    def start(self) -> 'Timer':
        if self.__start_time is not None and self.__stop_time is None:
            raise TimerError("Timer is already running. Use .stop() to stop it")
        self.__start_time = time.perf_counter()
        self.__stop_time = None
        return self

    def stop(self) -> float:
        self.__check_started()
        self.__stop_time = time.perf_counter()
        return self.__stop_time - self.__start_time

    @time_formatter
    def elapsed(self, *args, **kwargs) -> float:
        """Seconds from start to stop, or to now while running"""
        self.__check_started()
        end = self.__stop_time if self.__stop_time is not None else time.perf_counter()
        return end - self.__start_time

    def __enter__(self) -> 'Timer':
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class TimerError(Exception):
    """A custom exception used to report errors in use of Timer class"""
    pass
