class ParamodeError(Exception):
    """Base de todos los errores del paquete (entrada inválida o precondición rota)."""
    pass
