import json
import logging

import numpy as np


class LogUtil:
    """日志工具类"""

    @staticmethod
    def log_execution(logger, execution_data, result, level=logging.INFO):
        """记录实验执行日志"""
        try:
            log_data = {
                "execution": execution_data,
                "result": {
                    "success": result.get("success", False),
                    "message": result.get("message", ""),
                },
            }

            if not result.get("success", False):
                log_data["result"]["error"] = result.get("error", "Unknown error")

            logger.log(level, f"Execution result: {json.dumps(log_data, default=str)}")

        except Exception as e:
            logger.error(f"Error logging execution: {str(e)}")

    @staticmethod
    def log_array(logger, label, values, level=logging.DEBUG):
        """记录数组摘要 (形状、最小值、最大值)"""
        if not logger.isEnabledFor(level):
            return
        try:
            arr = np.asarray(values, dtype=float)
            if arr.size == 0:
                logger.log(level, f"{label}: empty")
                return
            logger.log(
                level,
                f"{label}: shape={arr.shape} min={np.nanmin(arr):.6g} "
                f"max={np.nanmax(arr):.6g}",
            )
        except Exception as e:
            logger.error(f"Error logging array {label}: {str(e)}")
