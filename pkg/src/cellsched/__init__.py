"""cellsched：负载耦合干扰下基站簇调度的节能求解工具箱。"""

__version__ = "0.1.0"
