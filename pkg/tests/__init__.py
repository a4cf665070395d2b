
if __name__ == '__main__':
    from . import *
    import unittest
    unittest.main()
