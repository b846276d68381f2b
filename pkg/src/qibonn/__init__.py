"""QIBONN - 量子启发的双层优化：联合调优特征选择与神经网络超参数"""

__version__ = "0.1.0"
