# 验证 oracle 模块初始化文件
"""
蛮力/解析参照解，测试与命令行 `oracle <name>` 共用
每个 @oracle 函数无参数运行并返回可打印的字典
"""
