"""
robsyn 测试套件
"""
