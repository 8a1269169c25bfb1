"""
This module contains general helper functions
"""


def round_all_dict_values(my_dict: dict, digits: int = 2) -> dict:
    """
    This function rounds all float values in a dictionary to the number of digits specified. Works for nested
    dictionaries and for lists of dictionaries; strings and integers are kept as they are.
    :param my_dict: (nested) dictionary
    :param digits: number of digits of the rounded values
    :return: dictionary with rounded values
    """
    return {key: _round_value(value, digits) for key, value in my_dict.items()}


def _round_value(value, digits):
    if isinstance(value, dict):
        return round_all_dict_values(value, digits)
    if isinstance(value, list):
        return [_round_value(item, digits) for item in value]
    if isinstance(value, float):
        return round(value, digits)
    return value


def label_to_filename(label: str) -> str:
    """
    This function turns a program point label into a string that is safe as part of a file name.
    :param label: label such as 'B1.0' or 'B1->B2'
    :return: e.g. 'B1.0' or 'B1_to_B2'
    """
    return label.replace("->", "_to_")
