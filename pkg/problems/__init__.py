# 基准问题模块初始化文件
"""
每个模块用 @problem_builder 注册一个基准问题；
构造器返回 (CompliancePipeline, Polytope, GlobalConstraints)
"""
