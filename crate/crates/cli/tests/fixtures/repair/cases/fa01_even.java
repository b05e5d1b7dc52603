package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void fourIsOdd() {
        Calc calc = new Calc();
        assertFalse(calc.isEven(4));
    }
}
