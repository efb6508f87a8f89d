# ergokde test suite
