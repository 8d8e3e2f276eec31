"""核心模块：网络模型、线性规划、列生成与实例生成"""
