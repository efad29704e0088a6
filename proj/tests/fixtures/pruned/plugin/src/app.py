# Only safe code lives outside the dependency directories.
def greet(name):
    return "hello " + name
