def never_imported(value):
    return value * 2
